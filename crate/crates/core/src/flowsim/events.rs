use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use super::integrator::{check_start, drive, IntegrateOptions, Segment, Status, Stepper};
use super::{dot, norm, FlowField};
use crate::{Error, Result};

/// Event times are bisected down to this width.
pub const EVENT_TIME_TOL: f64 = 1e-10;
/// A node whose field norm falls below this is treated as stopped.
pub const STAGNATION_SPEED: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Orientation {
    /// The signed distance goes from negative to nonnegative.
    Increasing,
    /// The signed distance goes from positive to nonpositive.
    Decreasing,
    Either,
}

impl Orientation {
    fn crosses(self, g0: f64, g1: f64) -> bool {
        match self {
            Orientation::Increasing => g0 < 0.0 && g1 >= 0.0,
            Orientation::Decreasing => g0 > 0.0 && g1 <= 0.0,
            Orientation::Either => (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0),
        }
    }
}

/// The hyperplane `{x : normal · x = offset}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SectionSpec {
    normal: Vec<f64>,
    pub offset: f64,
    pub orientation: Orientation,
}

impl SectionSpec {
    /// The normal is rescaled to unit length (the offset with it).
    pub fn new(normal: &[f64], offset: f64, orientation: Orientation) -> Result<Self> {
        let n = norm(normal);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid("section normal must be a nonzero finite vector"));
        }
        Ok(SectionSpec {
            normal: normal.iter().map(|v| v / n).collect(),
            offset: offset / n,
            orientation,
        })
    }

    /// `{x_axis = value}` crossed in the given direction.
    pub fn coordinate(dim: usize, axis: usize, value: f64, orientation: Orientation) -> Result<Self> {
        if axis >= dim {
            return Err(Error::invalid("section axis out of range"));
        }
        let mut n = vec![0.0; dim];
        n[axis] = 1.0;
        Self::new(&n, value, orientation)
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }
}

/// First oriented zero of `g` inside an accepted step, located by
/// re-stepping from the left node.
pub(crate) fn first_crossing<F: FlowField + ?Sized>(
    st: &mut Stepper<F>,
    seg: &Segment,
    g: &impl Fn(&[f64]) -> f64,
    orientation: Orientation,
) -> Option<(f64, Vec<f64>)> {
    const SUB: usize = 4;
    let h = seg.h();
    let mut buf = vec![0.0; seg.x0.len()];
    let mut taus = [0.0; SUB + 1];
    let mut gs = [0.0; SUB + 1];
    for k in 0..=SUB {
        taus[k] = h * k as f64 / SUB as f64;
        gs[k] = if k == 0 {
            g(seg.x0)
        } else if k == SUB {
            g(seg.x1)
        } else {
            seg.hermite(seg.t0 + taus[k], &mut buf);
            g(&buf)
        };
    }
    let k = (0..SUB).find(|&k| orientation.crosses(gs[k], gs[k + 1]))?;
    let (mut lo, mut hi) = (taus[k], taus[k + 1]);
    let positive_start = gs[k] > 0.0;
    while hi - lo > EVENT_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        st.advance(seg.x0, seg.f0, mid, &mut buf);
        let gm = g(&buf);
        let same_side = if positive_start { gm > 0.0 } else { gm < 0.0 };
        if same_side {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    st.advance(seg.x0, seg.f0, tau, &mut buf);
    Some((seg.t0 + tau, buf))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum ReturnOutcome {
    Crossed {
        point: Vec<f64>,
        tau: f64,
    },
    /// No oriented crossing by `t_max` (the return time is infinite).
    NoCrossing {
        status: Status,
    },
    /// The field vanishes at the start or the orbit stopped moving.
    Stagnant,
}

impl ReturnOutcome {
    pub fn tau(&self) -> Option<f64> {
        match self {
            ReturnOutcome::Crossed { tau, .. } => Some(*tau),
            _ => None,
        }
    }
}

fn stagnant_at<F: FlowField + ?Sized>(field: &F, x: &[f64]) -> bool {
    let mut f = vec![0.0; x.len()];
    field.eval(x, &mut f);
    norm(&f) <= STAGNATION_SPEED
}

/// First oriented crossing of the section after time 0.
///
/// A start point lying on the section does not count as a crossing.
pub fn first_return<F: FlowField + ?Sized>(
    field: &F,
    x0: &[f64],
    section: &SectionSpec,
    t_max: f64,
    tol: f64,
) -> Result<ReturnOutcome> {
    check_start(field, x0, tol)?;
    if section.normal.len() != field.dim() {
        return Err(Error::invalid("section dimension does not match the field"));
    }
    if !(t_max > 0.0) {
        return Err(Error::invalid("tMax must be positive"));
    }
    if stagnant_at(field, x0) {
        return Ok(ReturnOutcome::Stagnant);
    }
    let g = |x: &[f64]| section.signed_distance(x);
    let mut found = None;
    let mut stalled = false;
    let summary = drive(field, x0, t_max, IntegrateOptions::new(tol), |st, seg| {
        if let Some(hit) = first_crossing(st, seg, &g, section.orientation) {
            found = Some(hit);
            return false;
        }
        if norm(seg.f1) <= STAGNATION_SPEED {
            stalled = true;
            return false;
        }
        true
    });
    Ok(match found {
        Some((tau, point)) => ReturnOutcome::Crossed { point, tau },
        None if stalled => ReturnOutcome::Stagnant,
        None => ReturnOutcome::NoCrossing {
            status: summary.status,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PeriodEstimate {
    /// Zero for a fixed point.
    pub period: f64,
    /// Distance between the start and the returning point.
    pub closure: f64,
    pub fixed_point: bool,
}

/// Refines a period guess on the section through `x0` normal to the field.
///
/// The orbit is followed for `2·guess`; among the returns to the section the
/// one nearest `guess` is kept. `None` when no return exists or the return
/// misses `x0` by more than `tol`. The integrator runs at `tol / 1000`
/// (clamped to the admissible range).
pub fn detect_period<F: FlowField + ?Sized>(
    field: &F,
    x0: &[f64],
    guess: f64,
    tol: f64,
) -> Result<Option<PeriodEstimate>> {
    if !(guess > 0.0) {
        return Err(Error::invalid("period guess must be positive"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let int_tol = (tol * 1e-3).clamp(super::TOL_MIN, super::TOL_MAX);
    check_start(field, x0, int_tol)?;
    let mut f0 = vec![0.0; x0.len()];
    field.eval(x0, &mut f0);
    let speed = norm(&f0);
    if speed <= STAGNATION_SPEED {
        return Ok(Some(PeriodEstimate {
            period: 0.0,
            closure: 0.0,
            fixed_point: true,
        }));
    }
    let normal: Vec<f64> = f0.iter().map(|v| v / speed).collect();
    let g = |x: &[f64]| {
        x.iter()
            .zip(x0)
            .zip(&normal)
            .map(|((a, b), n)| (a - b) * n)
            .sum::<f64>()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let opts = IntegrateOptions::new(int_tol).max_step(guess / 16.0);
    drive(field, x0, 2.0 * guess, opts, |st, seg| {
        if let Some((t, x)) = first_crossing(st, seg, &g, Orientation::Increasing) {
            let better = best
                .as_ref()
                .is_none_or(|(tb, _)| (t - guess).abs() < (tb - guess).abs());
            if better {
                best = Some((t, x));
            }
        }
        true
    });
    Ok(best.and_then(|(period, x)| {
        let closure = x
            .iter()
            .zip(x0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        (closure <= tol).then_some(PeriodEstimate {
            period,
            closure,
            fixed_point: false,
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowsim::{ConstantField, FnField};
    use core::f64::consts::PI;

    fn rotation() -> FnField<impl Fn(&[f64], &mut [f64])> {
        FnField::new(2, |x: &[f64], o: &mut [f64]| {
            o[0] = -x[1];
            o[1] = x[0];
        })
    }

    #[test]
    fn straight_transit() {
        let f = ConstantField(vec![-1.0, 0.0, 0.0]);
        let s = SectionSpec::coordinate(3, 0, -3.0, Orientation::Decreasing).unwrap();
        let r = first_return(&f, &[3.0, 0.2, 0.1], &s, 20.0, 1e-9).unwrap();
        match r {
            ReturnOutcome::Crossed { point, tau } => {
                assert!((tau - 6.0).abs() < 1e-9);
                assert!((point[0] + 3.0).abs() < 1e-9);
                assert!((point[1] - 0.2).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let right = ConstantField(vec![1.0, 0.0, 0.0]);
        let r = first_return(&right, &[3.0, 0.0, 0.0], &s, 20.0, 1e-9).unwrap();
        assert!(matches!(r, ReturnOutcome::NoCrossing { .. }));
    }

    #[test]
    fn half_rotation() {
        let s = SectionSpec::new(&[0.0, -1.0], 0.0, Orientation::Increasing).unwrap();
        let r = first_return(&rotation(), &[1.0, 0.0], &s, 10.0, 1e-10).unwrap();
        let ReturnOutcome::Crossed { point, tau } = r else {
            panic!("{r:?}")
        };
        assert!((tau - PI).abs() < 1e-9);
        assert!((point[0] + 1.0).abs() < 1e-8 && point[1].abs() < 1e-9);
    }

    #[test]
    fn stagnant_start() {
        let s = SectionSpec::coordinate(2, 0, 1.0, Orientation::Either).unwrap();
        let r = first_return(&rotation(), &[0.0, 0.0], &s, 10.0, 1e-9).unwrap();
        assert_eq!(r, ReturnOutcome::Stagnant);
    }

    #[test]
    fn rotation_period() {
        let p = detect_period(&rotation(), &[1.0, 0.0], 6.0, 1e-6)
            .unwrap()
            .unwrap();
        assert!((p.period - 2.0 * PI).abs() < 1e-6);
        let p = detect_period(&rotation(), &[0.0, 0.0], 3.0, 1e-6)
            .unwrap()
            .unwrap();
        assert!(p.fixed_point && p.period == 0.0);
    }

    #[test]
    fn non_returning_orbit() {
        let f = ConstantField(vec![1.0, 0.0]);
        assert!(detect_period(&f, &[0.0, 0.0], 5.0, 1e-6).unwrap().is_none());
    }

    #[test]
    fn zero_normal_rejected() {
        assert!(SectionSpec::new(&[0.0, 0.0], 1.0, Orientation::Either).is_err());
    }
}
