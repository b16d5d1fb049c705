//! Chart-level flow integration and the statistics built on it.
//!
//! A [`FlowField`] is an autonomous vector field in explicit coordinates.
//! [`integrate`] runs a Dormand–Prince 5(4) integrator with PI step control
//! and records a [`Trajectory`] with cubic Hermite dense output. Sections,
//! periods, occupation times and separated-set entropy estimates sit on top.

mod entropy;
mod events;
mod integrator;
mod occupation;

pub use entropy::{
    estimate_from_orbits, growth_slope, sample_orbits, separated_entropy, separated_subset,
    slope_from_orbits, ChartMetric, Euclidean, FieldSampler, FlatTorus, OrbitSampler, SeparatedSetEstimate,
    SlopeEstimate,
};
pub(crate) use events::first_crossing;
pub use events::{
    detect_period, first_return, Orientation, PeriodEstimate, ReturnOutcome, SectionSpec, EVENT_TIME_TOL,
    STAGNATION_SPEED,
};
pub use integrator::{
    drive, integrate, integrate_with, DriveSummary, IntegrateOptions, Segment, Status, StepStats, Stepper,
    Trajectory, TOL_MAX, TOL_MIN,
};
pub use occupation::{occupation, OccupancyResult, SpeedFn};

use alloc::vec::Vec;
use num_traits::Float;

use crate::diskflow::DiskField;

/// Where a field may be evaluated.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum ChartBounds {
    Unbounded,
    /// Closed ball about the origin.
    Ball {
        radius: f64,
    },
    /// Closed coordinate box.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl ChartBounds {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            ChartBounds::Unbounded => x.iter().all(|v| v.is_finite()),
            ChartBounds::Ball { radius } => x.iter().map(|v| v * v).sum::<f64>() <= radius * radius,
            ChartBounds::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h),
        }
    }
}

/// An autonomous vector field on a coordinate chart.
pub trait FlowField {
    fn dim(&self) -> usize;

    /// Writes the field value at `x` into `out`; both have length `dim()`.
    fn eval(&self, x: &[f64], out: &mut [f64]);

    fn bounds(&self) -> ChartBounds {
        ChartBounds::Unbounded
    }
}

impl<F: FlowField + ?Sized> FlowField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (**self).eval(x, out)
    }
    fn bounds(&self) -> ChartBounds {
        (**self).bounds()
    }
}

/// A field given by a closure.
pub struct FnField<F> {
    pub dim: usize,
    pub bounds: ChartBounds,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField {
            dim,
            bounds: ChartBounds::Unbounded,
            f,
        }
    }

    pub fn with_bounds(mut self, bounds: ChartBounds) -> Self {
        self.bounds = bounds;
        self
    }
}

impl<F: Fn(&[f64], &mut [f64])> FlowField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
    fn bounds(&self) -> ChartBounds {
        self.bounds.clone()
    }
}

/// A constant vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantField(pub Vec<f64>);

impl FlowField for ConstantField {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn eval(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
}

/// Radius slack for disk fields, so that the invariant boundary circle does
/// not trip the chart-exit check through round-off.
pub const DISK_CHART_SLACK: f64 = 1e-6;

impl FlowField for DiskField {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let v = self.eval_unchecked([x[0], x[1]]);
        out.copy_from_slice(&v);
    }
    fn bounds(&self) -> ChartBounds {
        ChartBounds::Ball {
            radius: 1.0 + DISK_CHART_SLACK,
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
