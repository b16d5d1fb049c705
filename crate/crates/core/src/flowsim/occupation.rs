use alloc::vec;
use alloc::vec::Vec;

use super::events::EVENT_TIME_TOL;
use super::integrator::{check_start, drive, IntegrateOptions, Segment, Status, Stepper};
use super::FlowField;
use crate::quad::GaussLegendre;
use crate::{Error, Result};

/// A positive speed factor on the chart.
pub type SpeedFn<'a> = &'a dyn Fn(&[f64]) -> f64;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OccupancyResult {
    /// Time actually integrated (short of the request if the run stopped).
    pub t_total: f64,
    /// Lebesgue measure of the times spent in the region.
    pub j: f64,
    /// `∫_{in region} 1/speed + (t_total - j)` when a speed is supplied.
    pub lambda: Option<f64>,
    pub status: Status,
}

/// Sub-samples per accepted step used to detect boundary crossings.
const SUB: usize = 8;

fn boundary<F: FlowField + ?Sized>(
    st: &mut Stepper<F>,
    seg: &Segment,
    region: &impl Fn(&[f64]) -> bool,
    mut lo: f64,
    mut hi: f64,
    inside_lo: bool,
    buf: &mut [f64],
) -> f64 {
    while hi - lo > EVENT_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        st.advance(seg.x0, seg.f0, mid, buf);
        if region(buf) == inside_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Time the orbit of `x0` spends in `region` up to time `t`.
///
/// Region membership is sampled on a sub-grid of each accepted step and
/// every change is bisected to [`EVENT_TIME_TOL`]. With `speed`, the time
/// spent inside is additionally re-measured under the time change that
/// multiplies the field by `speed` there, giving `lambda`.
pub fn occupation<F, R>(
    field: &F,
    x0: &[f64],
    t: f64,
    region: R,
    speed: Option<SpeedFn>,
    tol: f64,
) -> Result<OccupancyResult>
where
    F: FlowField + ?Sized,
    R: Fn(&[f64]) -> bool,
{
    check_start(field, x0, tol)?;
    if !(t >= 0.0) {
        return Err(Error::invalid("occupation time must be nonnegative"));
    }
    let gl = GaussLegendre::new(5);
    let d = field.dim();
    let mut buf = vec![0.0; d];
    let mut j = 0.0;
    let mut slowed = 0.0;
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let summary = drive(field, x0, t, IntegrateOptions::new(tol), |st, seg| {
        let h = seg.h();
        let mut taus = [0.0; SUB + 1];
        let mut inside = [false; SUB + 1];
        for k in 0..=SUB {
            taus[k] = h * k as f64 / SUB as f64;
            inside[k] = if k == 0 {
                region(seg.x0)
            } else if k == SUB {
                region(seg.x1)
            } else {
                seg.hermite(seg.t0 + taus[k], &mut buf);
                region(&buf)
            };
        }
        intervals.clear();
        let mut open = if inside[0] { Some(0.0) } else { None };
        for k in 0..SUB {
            if inside[k] != inside[k + 1] {
                let cut = boundary(st, seg, &region, taus[k], taus[k + 1], inside[k], &mut buf);
                match open.take() {
                    Some(a) => intervals.push((a, cut)),
                    None => open = Some(cut),
                }
            }
        }
        if let Some(a) = open {
            intervals.push((a, h));
        }
        for &(a, b) in &intervals {
            j += b - a;
            if let Some(speed) = speed {
                slowed += gl.integrate(a, b, |tau| {
                    seg.hermite(seg.t0 + tau, &mut buf);
                    1.0 / speed(&buf)
                });
            }
        }
        true
    });
    let t_total = summary.t;
    let j = j.clamp(0.0, t_total);
    Ok(OccupancyResult {
        t_total,
        j,
        lambda: speed.map(|_| slowed + (t_total - j)),
        status: summary.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowsim::FnField;
    use core::f64::consts::PI;

    fn rotation() -> FnField<impl Fn(&[f64], &mut [f64])> {
        FnField::new(2, |x: &[f64], o: &mut [f64]| {
            o[0] = -x[1];
            o[1] = x[0];
        })
    }

    #[test]
    fn whole_chart() {
        let r = occupation(&rotation(), &[1.0, 0.0], 7.5, |_| true, None, 1e-9).unwrap();
        assert_eq!(r.j, 7.5);
    }

    #[test]
    fn upper_half_plane() {
        let r = occupation(&rotation(), &[1.0, 0.0], 2.0 * PI, |x| x[1] > 0.0, None, 1e-10).unwrap();
        assert!((r.j - PI).abs() < 1e-6, "{}", r.j);
    }

    #[test]
    fn additivity_over_disjoint_regions() {
        let f = rotation();
        let x0 = [0.6, 0.3];
        let a = occupation(&f, &x0, 20.0, |x| x[0] > 0.2, None, 1e-10).unwrap().j;
        let b = occupation(&f, &x0, 20.0, |x| x[0] < -0.1, None, 1e-10).unwrap().j;
        let ab = occupation(&f, &x0, 20.0, |x| x[0] > 0.2 || x[0] < -0.1, None, 1e-10)
            .unwrap()
            .j;
        assert!((a + b - ab).abs() < 1e-8);
    }

    #[test]
    fn slow_region_accumulates() {
        let slow = |_: &[f64]| 1.0 / 20.0;
        let r = occupation(
            &rotation(),
            &[1.0, 0.0],
            2.0 * PI,
            |x| x[1] > 0.0,
            Some(&slow),
            1e-10,
        )
        .unwrap();
        let lam = r.lambda.unwrap();
        assert!(lam >= r.j / 20.0);
        assert!((lam - (20.0 * PI + PI)).abs() < 1e-5);
    }
}
