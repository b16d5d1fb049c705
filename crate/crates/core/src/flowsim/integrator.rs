use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;
use num_traits::Float;

use super::FlowField;
use crate::{Error, Result};

pub const TOL_MIN: f64 = 1e-12;
pub const TOL_MAX: f64 = 1e-4;

// Dormand–Prince 5(4) tableau; the fields are autonomous so the nodes
// c_i are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Step-control exponents (PI controller for an order-5 pair).
const PI_ALPHA: f64 = 0.7 / 5.0;
const PI_BETA: f64 = 0.4 / 5.0;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// The stage machinery of one Dormand–Prince step, reusable for
/// re-stepping inside an accepted interval.
pub struct Stepper<'f, F: FlowField + ?Sized> {
    field: &'f F,
    k: [Vec<f64>; 7],
    y: Vec<f64>,
    evaluations: u64,
}

impl<'f, F: FlowField + ?Sized> Stepper<'f, F> {
    pub fn new(field: &'f F) -> Self {
        let d = field.dim();
        Stepper {
            field,
            k: core::array::from_fn(|_| vec![0.0; d]),
            y: vec![0.0; d],
            evaluations: 0,
        }
    }

    pub fn field(&self) -> &'f F {
        self.field
    }

    pub fn eval(&mut self, x: &[f64], out: &mut [f64]) {
        self.evaluations += 1;
        self.field.eval(x, out);
    }

    /// Fifth-order step of size `h` from `x` (with `fx = f(x)`); the value
    /// lands in `out`, and `f(out)` is left in stage 7.
    fn stages(&mut self, x: &[f64], fx: &[f64], h: f64, out: &mut [f64]) {
        self.k[0].copy_from_slice(fx);
        for s in 1..7 {
            for (i, (yi, xi)) in self.y.iter_mut().zip(x).enumerate() {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                *yi = xi + h * acc;
            }
            self.evaluations += 1;
            self.field.eval(&self.y, &mut self.k[s]);
        }
        // row 7 of A is the fifth-order weight vector, so y is the solution
        out.copy_from_slice(&self.y);
    }

    /// Error estimate vector of the last [`Self::stages`] call.
    fn error(&self, h: f64, err: &mut [f64]) {
        for (i, e) in err.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (s, c) in E.iter().enumerate() {
                acc += c * self.k[s][i];
            }
            *e = h * acc;
        }
    }

    /// Fifth-order state after time `h` from `x`, without error control.
    /// Used to refine events inside an accepted step.
    pub fn advance(&mut self, x: &[f64], fx: &[f64], h: f64, out: &mut [f64]) {
        if h == 0.0 {
            out.copy_from_slice(x);
            return;
        }
        self.stages(x, fx, h, out);
    }
}

/// One accepted step, exposed to observers.
pub struct Segment<'a> {
    pub t0: f64,
    pub t1: f64,
    pub x0: &'a [f64],
    pub f0: &'a [f64],
    pub x1: &'a [f64],
    pub f1: &'a [f64],
}

impl Segment<'_> {
    pub fn h(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Cubic Hermite interpolant at `t ∈ [t0, t1]`.
    pub fn hermite(&self, t: f64, out: &mut [f64]) {
        hermite(self.t0, self.t1, self.x0, self.f0, self.x1, self.f1, t, out);
    }
}

#[allow(clippy::too_many_arguments)]
fn hermite(t0: f64, t1: f64, x0: &[f64], f0: &[f64], x1: &[f64], f1: &[f64], t: f64, out: &mut [f64]) {
    let h = t1 - t0;
    let s = if h > 0.0 { (t - t0) / h } else { 0.0 };
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for i in 0..out.len() {
        out[i] = h00 * x0[i] + h10 * h * f0[i] + h01 * x1[i] + h11 * h * f1[i];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Status {
    Completed,
    /// The next accepted state left the chart; the trajectory stops before it.
    ExitedChart,
    /// The step size underflowed; the last state is the last reliable one.
    Stiff,
    StepLimit,
    /// An observer asked to stop.
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub evaluations: u64,
    /// Largest componentwise local error estimate among accepted steps.
    pub max_local_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Absolute and relative tolerance.
    pub tol: f64,
    pub max_step: f64,
    pub max_steps: u64,
}

impl IntegrateOptions {
    pub fn new(tol: f64) -> Self {
        IntegrateOptions {
            tol,
            max_step: f64::INFINITY,
            max_steps: 20_000_000,
        }
    }

    pub fn max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }
}

pub struct DriveSummary {
    pub t: f64,
    pub x: Vec<f64>,
    pub status: Status,
    pub stats: StepStats,
}

fn err_norm(x: &[f64], xn: &[f64], err: &[f64], tol: f64) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..x.len() {
        let sc = tol + tol * x[i].abs().max(xn[i].abs());
        m = m.max(err[i].abs() / sc);
    }
    if m.is_finite() {
        m
    } else {
        f64::INFINITY
    }
}

fn initial_step<F: FlowField + ?Sized>(st: &mut Stepper<F>, x: &[f64], fx: &[f64], tol: f64) -> f64 {
    let sc = |v: f64| tol + tol * v.abs();
    let d0 = x.iter().map(|v| v.abs() / sc(*v)).fold(0.0, f64::max);
    let d1 = x
        .iter()
        .zip(fx)
        .map(|(v, f)| f.abs() / sc(*v))
        .fold(0.0, f64::max);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let x1: Vec<f64> = x.iter().zip(fx).map(|(v, f)| v + h0 * f).collect();
    let mut f1 = vec![0.0; x.len()];
    st.eval(&x1, &mut f1);
    let d2 = x
        .iter()
        .zip(fx.iter().zip(&f1))
        .map(|(v, (a, b))| (b - a).abs() / sc(*v))
        .fold(0.0, f64::max)
        / h0;
    let dm = d1.max(d2);
    let h1 = if !(dm > 1e-15) {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    let h = (100.0 * h0).min(h1);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        1e-6
    }
}

/// Runs the integrator from `x0` for time `t_end`, handing every accepted
/// step to `observer`. The observer returns `false` to stop.
pub fn drive<F, O>(field: &F, x0: &[f64], t_end: f64, opts: IntegrateOptions, mut observer: O) -> DriveSummary
where
    F: FlowField + ?Sized,
    O: FnMut(&mut Stepper<F>, &Segment) -> bool,
{
    let d = field.dim();
    let bounds = field.bounds();
    let tol = opts.tol;
    let mut st = Stepper::new(field);
    let mut stats = StepStats::default();
    let mut x = x0.to_vec();
    let mut fx = vec![0.0; d];
    st.eval(&x, &mut fx);
    let mut xn = vec![0.0; d];
    let mut fnew = vec![0.0; d];
    let mut err = vec![0.0; d];
    let mut t = 0.0;
    let mut status = Status::Completed;

    let finish = |t: f64, x: Vec<f64>, status: Status, mut stats: StepStats, st: &Stepper<F>| {
        stats.evaluations = st.evaluations;
        DriveSummary { t, x, status, stats }
    };

    if fx.iter().any(|v| !v.is_finite()) {
        return finish(t, x, Status::Stiff, stats, &st);
    }
    if t_end <= 0.0 {
        return finish(t, x, status, stats, &st);
    }
    let mut h = initial_step(&mut st, &x, &fx, tol).min(opts.max_step);
    let mut prev_err: f64 = 1e-4;
    let mut just_rejected = false;

    loop {
        if t >= t_end {
            break;
        }
        if stats.accepted >= opts.max_steps {
            status = Status::StepLimit;
            break;
        }
        let remaining = t_end - t;
        let mut last = false;
        h = h.min(opts.max_step);
        if h >= remaining * 0.999_999 {
            h = remaining;
            last = true;
        }
        st.stages(&x, &fx, h, &mut xn);
        st.error(h, &mut err);
        let en = err_norm(&x, &xn, &err, tol);
        if en <= 1.0 {
            let t_new = if last { t_end } else { t + h };
            fnew.copy_from_slice(&st.k[6]);
            if !bounds.contains(&xn) {
                status = Status::ExitedChart;
                break;
            }
            if fnew.iter().any(|v| !v.is_finite()) {
                status = Status::Stiff;
                break;
            }
            stats.accepted += 1;
            let local = err.iter().fold(0.0, |m: f64, e| m.max(e.abs()));
            stats.max_local_error = stats.max_local_error.max(local);
            let seg = Segment {
                t0: t,
                t1: t_new,
                x0: &x,
                f0: &fx,
                x1: &xn,
                f1: &fnew,
            };
            let go_on = observer(&mut st, &seg);
            core::mem::swap(&mut x, &mut xn);
            core::mem::swap(&mut fx, &mut fnew);
            t = t_new;
            if !go_on {
                status = Status::Stopped;
                break;
            }
            let mut factor = if en == 0.0 {
                MAX_FACTOR
            } else {
                SAFETY * en.powf(-PI_ALPHA) * prev_err.powf(PI_BETA)
            };
            factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
            if just_rejected {
                factor = factor.min(1.0);
            }
            h *= factor;
            prev_err = en.max(1e-4);
            just_rejected = false;
        } else {
            stats.rejected += 1;
            let factor = if en.is_finite() {
                (SAFETY * en.powf(-0.2)).max(MIN_FACTOR)
            } else {
                MIN_FACTOR
            };
            h *= factor;
            just_rejected = true;
        }
        if h < 1e-13 * t.abs().max(1.0) {
            status = Status::Stiff;
            break;
        }
    }
    finish(t, x, status, stats, &st)
}

/// Accepted nodes of one integration with Hermite dense output.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Row-major states, `dim` values per node.
    pub states: Vec<f64>,
    pub derivs: Vec<f64>,
    pub status: Status,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn deriv(&self, i: usize) -> &[f64] {
        &self.derivs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn end(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.len() - 1]
    }

    /// Dense output at `t`; `None` outside the integrated range.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        if !(t >= self.times[0] && t <= self.t_end()) {
            return None;
        }
        let k = self.times.partition_point(|s| *s < t);
        let mut out = vec![0.0; self.dim];
        if k == 0 {
            out.copy_from_slice(self.state(0));
            return Some(out);
        }
        hermite(
            self.times[k - 1],
            self.times[k],
            self.state(k - 1),
            self.deriv(k - 1),
            self.state(k),
            self.deriv(k),
            t,
            &mut out,
        );
        Some(out)
    }

    /// `t,x1,...,xd` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.dim {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for k in 0..self.len() {
            let _ = write!(out, "{}", self.times[k]);
            for v in self.state(k) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn check_start<F: FlowField + ?Sized>(field: &F, x0: &[f64], tol: f64) -> Result<()> {
    if x0.len() != field.dim() {
        return Err(Error::invalid("initial point has the wrong dimension"));
    }
    if !(TOL_MIN..=TOL_MAX).contains(&tol) {
        return Err(Error::invalid(alloc::format!(
            "tolerance {tol} outside [{TOL_MIN}, {TOL_MAX}]"
        )));
    }
    if !field.bounds().contains(x0) {
        return Err(Error::invalid("initial point lies outside the chart"));
    }
    Ok(())
}

pub fn integrate<F: FlowField + ?Sized>(field: &F, x0: &[f64], t: f64, tol: f64) -> Result<Trajectory> {
    integrate_with(field, x0, t, IntegrateOptions::new(tol))
}

pub fn integrate_with<F: FlowField + ?Sized>(
    field: &F,
    x0: &[f64],
    t: f64,
    opts: IntegrateOptions,
) -> Result<Trajectory> {
    check_start(field, x0, opts.tol)?;
    if !(t >= 0.0) {
        return Err(Error::invalid("integration time must be nonnegative"));
    }
    let d = field.dim();
    let mut f0 = vec![0.0; d];
    field.eval(x0, &mut f0);
    let mut times = vec![0.0];
    let mut states = x0.to_vec();
    let mut derivs = f0;
    let summary = drive(field, x0, t, opts, |_, seg| {
        times.push(seg.t1);
        states.extend_from_slice(seg.x1);
        derivs.extend_from_slice(seg.f1);
        true
    });
    Ok(Trajectory {
        dim: d,
        times,
        states,
        derivs,
        status: summary.status,
        stats: summary.stats,
    })
}
